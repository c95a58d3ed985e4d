//! Theta-body exclusion certificates over the orthogonality graph of a Bell
//! scenario.
//!
//! A symmetric `M ⪰ 0` vanishing on non-adjacent event pairs certifies that a
//! box `P` lies outside the theta body, and hence outside the quantum set,
//! whenever `⟨P|M|P⟩ − Σ_i M_ii P_i > 0`.

pub mod analytic;
pub mod cert;
pub mod chain;
pub mod graph;
pub mod templates;

pub use analytic::{exclude_by_analytic, AnalyticReport};
pub use cert::CertificateMatrix;
pub use chain::{find_chained_sequence, ChainMode, ChainedSequence};
pub use graph::{build_orthogonality_graph, maximal_cliques, OrthogonalityGraph};
pub use templates::{build_certificate, Template};
