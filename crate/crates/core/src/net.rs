//! Unrolled completion network.
