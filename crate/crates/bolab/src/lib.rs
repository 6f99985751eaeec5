pub mod error;
pub mod claws;
pub mod exact;
pub mod flows;
pub mod lab;
pub mod measures;
pub mod spectral;

pub use error::{Error, Result};
pub use spectral::{FourierField, OperatorWord};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/fields.md")]
    pub mod fields {}
    #[doc = include_str!("../../../book/src/conservation-laws.md")]
    pub mod conservation_laws {}
    #[doc = include_str!("../../../book/src/flows.md")]
    pub mod flows {}
    #[doc = include_str!("../../../book/src/measures.md")]
    pub mod measures {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    pub mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
