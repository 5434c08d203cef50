//! Signal ingestion, synthetic stand-in generators and corpus assembly.

pub mod corpus;
pub mod ingest;
pub mod synth;

pub use corpus::{build_corpus, ClassSpec, Corpus, CorpusItem, CorpusSpec, Recipe, RecipeOp, Source, Split};
pub use ingest::{ingest_csv, ingest_path, ingest_wav, list_signal_files, write_csv_signal};
pub use synth::synth_signal;
