//! Holds the `acceptance` test target, which runs after every other test
//! binary in a workspace test run.
