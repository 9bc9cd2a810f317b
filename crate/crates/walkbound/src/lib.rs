pub mod convolution;
pub mod example;
pub mod fock;
pub mod group;
pub mod harmonic;
pub mod kernel;
pub mod measure;
pub mod report;
pub mod scalar;

// The guide in book/ is compiled as doctests so its snippets cannot drift
// from the API.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/groups.md")]
    mod groups {}
    #[doc = include_str!("../../../book/src/convolution.md")]
    mod convolution {}
    #[doc = include_str!("../../../book/src/kernels.md")]
    mod kernels {}
    #[doc = include_str!("../../../book/src/space-time.md")]
    mod space_time {}
    #[doc = include_str!("../../../book/src/harmonic.md")]
    mod harmonic {}
    #[doc = include_str!("../../../book/src/example.md")]
    mod example {}
    #[doc = include_str!("../../../book/src/fock.md")]
    mod fock {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
