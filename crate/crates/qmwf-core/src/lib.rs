//! Sentence representation by projection of a CP-decomposed global tensor
//! onto a sentence's rank-1 product state, realized as a convolutional
//! network with product pooling, plus the question-answering ranking harness
//! that trains and evaluates it.
//!
//! The crate is organized around one identity: summing the channel outputs
//! of the network (patch 1, unshared kernels, linear pooling) equals the
//! brute-force contraction of the materialized global tensor with the
//! sentence's product state. [`tensor`] holds the dense oracle side,
//! [`network`] the convolutional side, and [`verify`] the property suite
//! that ties them together. [`embedding`], [`data`], [`training`] and
//! [`eval`] form the QA pipeline on top.

pub mod checkpoint;
pub mod data;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod network;
pub mod rng;
pub mod tensor;
pub mod training;
pub mod verify;
pub mod wavefunction;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use data::{filter_no_positive, load_tsv, negative_sample, Dataset, QaPair, QuestionGroup};
pub use embedding::{
    char_sentence_matrix, load_embeddings, sentence_matrix_word, tokenize, CharConv, CharInput,
    EmbeddingTable, Encoder, Vocabulary,
};
pub use error::{Error, Result};
pub use eval::{
    average_precision, mean_average_precision, mean_reciprocal_rank, p_at_1, MetricReport,
    RankedCandidates,
};
pub use network::{
    convolve, forward, log_product_pool, match_score, product_pool, QmwfConfig, QmwfModel,
    Representation,
};
pub use tensor::{
    cp_als, cp_reconstruct, inner_product, projection_bruteforce, tensor_product, CpFactors,
    CpFit, DenseTensor, DEFAULT_ELEMENT_CAP,
};
pub use training::{
    adam_step, backward, pairwise_hinge_loss, pairwise_loss, score_dataset, train, AdamState,
    EpochRecord, Gradients, HyperParams, TrainOutcome,
};
pub use verify::{run_verification, VerifyReport};
pub use wavefunction::{basis_probability, normalize, product_state, SentenceMatrix, StateVector};
