//! Detection of DNS servers abused as DoS/DDoS reflectors.
//!
//! Captured DNS traffic is labeled by pairing responses with the requests
//! seen at a monitoring boundary, grouped per server into 14×100 response
//! message matrices, and classified with an RBF-kernel SVM.
//!
//! Pipeline stages:
//!
//! * [`pcap`]: classic pcap reader/writer, Ethernet/IPv4/UDP decoding.
//! * [`dns`]: DNS header and first-question decoding.
//! * [`matcher`]: request/response pairing and unsolicited-response labeling.
//! * [`matrix`]: per-server feature matrices and their interchange file.
//! * [`svm`]: RBF kernel, SMO trainer, grid search and model files.
//! * [`eval`]: sampling regime, train/test split and classification reports.
//! * [`synth`]: deterministic synthetic traces.
//! * [`render`]: grayscale PGM images of matrices.
//! * [`pipeline`]: stage glue used by the command line.
//!
//! Data-parallel loops go through [`exec::Execution`]; with the `parallel`
//! feature disabled every loop runs sequentially.

pub mod dns;
pub mod eval;
pub mod exec;
pub mod matcher;
pub mod matrix;
pub mod pcap;
pub mod pipeline;
pub mod render;
pub mod responses;
pub mod svm;
pub mod synth;

mod label;

pub use dns::DnsMessage;
pub use eval::ClassReport;
pub use exec::Execution;
pub use label::{Label, ParseLabelError};
pub use matcher::LabeledResponse;
pub use matrix::FeatureMatrix;
pub use pcap::PacketRecord;
pub use svm::SvmModel;
