//! Runs the r0kit acceptance suite as the `acceptance` test target:
//! `cargo test -p r0kit-acceptance`.
