//! File formats: PNG images, binary checkpoints, and text configs.

mod checkpoint;
mod config_file;
mod png;

pub use checkpoint::{
    decode_store, encode_store, load_config, load_model, load_store, peek_dtype, save_model,
    save_store,
};
pub use config_file::{
    load_config_file, parse_config, save_config_file, serialize_config, ConfigFile,
};
pub use png::{list_png_files, load_rgb_dir, read_rgb_png, write_rgb_png};
