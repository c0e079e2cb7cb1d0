//! Host crate for the `acceptance` test target, which runs the end-to-end
//! criteria and prints one PASS/FAIL line for each.
