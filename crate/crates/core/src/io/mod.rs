//! Files in and out: the `USIR` container, configuration, PNG rendering.

mod config;
mod container;
mod render;

pub use config::{
    ConfigError, DenoiserSection, ExperimentConfig, ExperimentSection, GridConfig, OperatorKind, PhantomKind,
    PsfConfig, SamplerSection, VarianceSection, DEFAULT_THRESHOLD_SCALE,
};
pub use container::{read_container, write_container, Container, ContainerError, ContainerKind, FORMAT_VERSION, MAGIC};
pub use render::{encode_png, gray_levels, render_png, RenderError};
