//! Finitary operations on the rings `Z_n`, exact fixed-arity clone closures,
//! and the constructions that reduce clones on `Z_{p^k}` to clones on
//! `Z_{p^(k-1)}`.
//!
//! The crate is `no_std` (it needs `alloc`). The `parallel` feature (on by
//! default) lets the closure engine evaluate candidate batches on the rayon
//! pool; results never depend on the number of worker threads.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod catalog;
pub mod closure;
mod error;
pub mod finop;
pub mod howell;
pub mod reduction;
pub mod verify;
pub mod zmod;

pub use closure::{
    closure_part, comp_part, includes, member, CloneSpec, ClosureCache, ClosureOptions,
    ClosurePart, Generator, MemberSet,
};
pub use error::{Error, Result};
pub use finop::{OpTable, PackedKey};
pub use zmod::{Congruence, CrtPair, Modulus};
