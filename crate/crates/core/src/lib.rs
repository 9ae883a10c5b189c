pub mod angular;
pub mod carpets;
pub mod ce;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod revivals;
pub mod wavepacket;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/packets.md")]
    mod packets {}
    #[doc = include_str!("../../../book/src/evolution.md")]
    mod evolution {}
    #[doc = include_str!("../../../book/src/fractional-revivals.md")]
    mod fractional_revivals {}
    #[doc = include_str!("../../../book/src/carpets.md")]
    mod carpets {}
    #[doc = include_str!("../../../book/src/coulomb-excitation.md")]
    mod coulomb_excitation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
