//! C ABI for textlevel scoring. Placeholder; filled in after the core crate.
