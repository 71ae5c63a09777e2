//! Nothing lives here: this crate exists for its `benches/` target,
//! which times the bnn-core hot paths.
