//! Acceptance checks for `tinyarq`. The checks live in `tests/acceptance.rs`
//! and run with `cargo test -p tinyarq-validation`; this package sorts after
//! the library and CLI packages so a workspace test run reaches it last.
