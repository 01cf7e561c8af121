//! Sensor topology and the multimodal-fusion dynamic graph convolution.

mod adjacency;
mod layers;

pub use adjacency::{
    build_adjacency, duplicate_positions, read_positions, write_positions, AdjacencyMatrix, NodePosition,
};
pub use layers::{
    adjust_adjacency, adjust_adjacency_on, graph_conv_on, mfdgcn_block_on, mfdgcn_layer, modal_fusion,
    modal_fusion_on, spatial_correlation, spatial_correlation_on, FusionParams, FusionReading, FusionVars,
    GraphBlockConfig, GraphBlockTrace, GraphMode, SpatialWeights,
};
