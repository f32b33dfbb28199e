//! Perplexity-based quality filtering with a Kneser-Ney n-gram model trained
//! on a reference corpus.

mod arpa;
mod ngram;
mod select;

pub use arpa::{parse_arpa, read_arpa, to_arpa, write_arpa};
pub use ngram::{
    train_ngram, Discounts, NgramModel, TrainOptions, BOS, BOS_ID, EOS, EOS_ID, FALLBACK_DISCOUNT, UNK,
    UNK_ID,
};
pub use select::{quality_filter, score_perplexity, score_shards, select_top_k, PerplexityScore};
