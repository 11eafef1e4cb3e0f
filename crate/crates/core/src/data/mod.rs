//! Click-log ingestion and the preprocessing pipeline: parsing, session
//! building, frequency filtering, time split, recency cut, vocabulary,
//! prefix augmentation and padded batching.

mod batch;
mod events;
mod instances;
mod pipeline;
mod sessions;
mod vocab;

pub use batch::{batch_iter, epoch_order, sequential_batches, Batch};
pub use events::{parse_events, parse_timestamp, EventFormat, ParsedEvents, RawEvent, TimeFormat};
pub use instances::{augment_prefixes, encode_sessions, read_instances, write_instances, ClickSequence, Session};
pub use pipeline::{preprocess, DatasetStats, PreprocessConfig, Preprocessed};
pub use sessions::{build_sessions, filter_dataset, restrict_to_items, split_train_test, take_recent_fraction, RawSession, DAY_MS};
pub use vocab::Vocabulary;
