//! Holds the `acceptance` test target, which checks the library and the
//! experiment harness against the project's acceptance criteria. Run it
//! with `cargo test -p congestion-bandit-suite --test acceptance`.
