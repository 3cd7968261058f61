//! Book chapters compiled as doctests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod ch01 {}
#[doc = include_str!("../../../book/src/time_grids.md")]
pub mod ch02 {}
#[doc = include_str!("../../../book/src/spaces.md")]
pub mod ch03 {}
#[doc = include_str!("../../../book/src/operators.md")]
pub mod ch04 {}
#[doc = include_str!("../../../book/src/multifunctions.md")]
pub mod ch05 {}
#[doc = include_str!("../../../book/src/stepping.md")]
pub mod ch06 {}
#[doc = include_str!("../../../book/src/interpolants.md")]
pub mod ch07 {}
#[doc = include_str!("../../../book/src/diagnostics.md")]
pub mod ch08 {}
#[doc = include_str!("../../../book/src/harness.md")]
pub mod ch09 {}
