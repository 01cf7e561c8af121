//! Ingestion, cleaning, windowing, synthetic generation and anomaly
//! injection.

mod archive;
mod clean;
mod ibrl;
mod inject;
mod synth;
mod windows;

pub use archive::{read_archive, write_archive};
pub use clean::{
    clean_and_align, fill_gaps, zscore, CleanDataset, CleaningCounts, CleaningOptions, Exclusion, SeriesId,
    IBRL_MODALITIES, SIGMA_FLOOR,
};
pub use ibrl::{format_reading, ingest_ibrl, RawReading, RawReadingLog};
pub use inject::{correlation, inject_anomalies, inject_correlation_anomaly, CorrelationAnomaly};
pub use synth::{synth_generate, synth_modality_names, SynthConfig, SyntheticData};
pub use windows::{make_windows, window_count, Cell, LabeledWindowSet, Provenance};
