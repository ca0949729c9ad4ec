//! Text-side tooling: the remote-sensing corpus (build, chunk, split), a
//! retrieval index over it, class-conditioned prompt assembly, the LLM
//! fine-tune job spec and perplexity scoring.

mod corpus;
mod index;
mod perplexity;
mod prompt;
mod qlora;

pub use corpus::{
    build_corpus, chunk_corpus, read_corpus_file, split_corpus, write_corpus_file, CorpusChunk,
    DEFAULT_EOS, DEFAULT_MIN_CHARS, DEFAULT_TEST_FRACTION,
};
pub use index::{
    index_corpus, retrieve, Embedder, HashedBowEmbedder, IndexEntry, RetrievalHit, VectorIndex,
    DEFAULT_INDEX_CHUNK_SIZE,
};
pub use perplexity::perplexity;
pub use prompt::{
    assemble_prompt, build_prompt_bank, context_keywords, read_prompt_bank, write_prompt_bank,
    ClassCatalog, PromptSpec, DEFAULT_SCHEDULER, DEFAULT_SIDE, DEFAULT_STEPS, MAX_CONTEXT_WORDS,
    NEGATIVE_CUES, TEMPLATES,
};
pub use qlora::{build_qlora_spec, QLoraJobSpec, TargetModule};
