//! Registry-record ingestion: parsing, validation, inclusion filtering, and
//! feature/auxiliary extraction.

mod dataset;
mod extract;
mod parse;
mod types;

pub use dataset::{
    ingest_corpus, load_dataset, save_dataset, Dataset, DatasetError, DatasetRow, IngestError,
    IngestReport, RejectedDocument, DATASET_SCHEMA, DATASET_VERSION,
};
pub use extract::{extract_auxiliary, extract_features};
pub use parse::{parse_date, parse_study, parse_study_value, passes_inclusion};
pub use types::{
    category_cardinality, decode_categorical, encode_categorical, AdverseEventEntry, ArmGroup,
    ArmGroupType, AuxiliaryRow, DesignInfo, DocumentFlags, EligibilityInfo, EncodingError,
    FeatureRow, InterventionInfo, InterventionType, Masking, OverallStatus, ParseError, Phase,
    PrimaryPurpose, Sex, StudyRecord, StudyType, CATEGORICAL_FEATURES,
};
