//! Network realizations: RRH and user placement on a wrap-around hexagonal
//! layout, large-scale fading, and user-centric serving clusters.

mod large_scale;
mod layout;

pub use large_scale::{
    draw_shadowing, form_clusters, large_scale_state, path_loss_db, path_loss_linear,
    Clusters, LargeScaleState,
};
pub use layout::{
    generate_layout, hex_area_km2, wrapped_distance, GeometryConfig, HexLayout,
    NetworkRealization, Point, MAX_PLACEMENT_ATTEMPTS,
};
