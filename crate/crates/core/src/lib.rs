//! Universality classes, bootstrap closures and kinetically constrained
//! dynamics for two-dimensional update families.

pub mod family;
pub mod geometry;
pub mod bootstrap;
pub mod difficulty;
pub mod droplet;
pub mod kcm;
pub mod chain;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/families.md")]
    mod families {}
    #[doc = include_str!("../../../book/src/stable-directions.md")]
    mod stable_directions {}
    #[doc = include_str!("../../../book/src/difficulty.md")]
    mod difficulty {}
    #[doc = include_str!("../../../book/src/droplets.md")]
    mod droplets {}
    #[doc = include_str!("../../../book/src/kcm.md")]
    mod kcm {}
    #[doc = include_str!("../../../book/src/chains.md")]
    mod chains {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
