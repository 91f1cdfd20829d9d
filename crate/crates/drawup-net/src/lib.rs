//! Directed dependency networks from joint price drawups.
//!
//! End-to-end this crate turns a panel of daily price series into a systemic
//! importance analysis:
//!
//! 1. [`ingest`] — parse, align, forward-fill and period-slice CSV quotes.
//! 2. [`drawup`] — detect ε-drawups per series (persistent upward runs
//!    confirmed by a correction exceeding the local variation ε).
//! 3. [`comovement`] — lagged joint-drawup frequencies, corrected for the
//!    independence baseline and permutation-filtered into the dependency
//!    matrix W.
//! 4. [`graph`] — W as a directed network: components, density, path lengths.
//! 5. [`centrality`] — impacting/impacted feedback centralities and their
//!    ratio.
//! 6. [`bowtie`] — IN / SCC / OUT classification and link truncation.
//! 7. [`layout`] — the circular bow-tie figure as deterministic SVG.
//!
//! [`synth`] generates panels with planted lagged dependencies as ground
//! truth, and [`pipeline`] orchestrates the whole run with persisted,
//! auditable intermediates. The mdbook under `book/` walks through each stage;
//! its code snippets compile and run as doc-tests of this crate.

pub mod bowtie;
pub mod centrality;
pub mod comovement;
pub mod config;
pub mod drawup;
pub mod error;
pub mod graph;
pub mod ingest;
pub mod layout;
pub mod pipeline;
mod seeds;
pub mod synth;

pub use error::{Error, Result};

// The book's code fences run as doc-tests so the guide can't drift from the
// library. rustdoc sets --cfg doctest when collecting them; these modules
// never exist in a normal build.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/getting-started.md")]
    mod getting_started {}
    #[doc = include_str!("../../../book/src/drawups.md")]
    mod drawups {}
    #[doc = include_str!("../../../book/src/comovement.md")]
    mod comovement {}
    #[doc = include_str!("../../../book/src/network-centrality.md")]
    mod network_centrality {}
    #[doc = include_str!("../../../book/src/bowtie-layout.md")]
    mod bowtie_layout {}
    #[doc = include_str!("../../../book/src/synthetic-data.md")]
    mod synthetic_data {}
    #[doc = include_str!("../../../book/src/pipeline-formats.md")]
    mod pipeline_formats {}
}
