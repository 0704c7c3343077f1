//! Holds the `acceptance` test target, which checks the library against
//! its published values and stated tolerances. Run it with
//! `cargo test -p chfif-verify --test acceptance`.
