//! The guide under `book/`, compiled so its examples stay honest.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/synthesis.md")]
pub mod synthesis {}

#[doc = include_str!("../../../book/src/corpus.md")]
pub mod corpus {}

#[doc = include_str!("../../../book/src/features.md")]
pub mod features {}

#[doc = include_str!("../../../book/src/gtm.md")]
pub mod gtm {}

#[doc = include_str!("../../../book/src/surface.md")]
pub mod surface {}

#[doc = include_str!("../../../book/src/sessions.md")]
pub mod sessions {}

#[doc = include_str!("../../../book/src/service.md")]
pub mod service {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
