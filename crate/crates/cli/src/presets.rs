//! Built-in figure presets, shipped as TOML under `presets/`.

use crate::config::Config;
use crate::CliError;

pub const NAMES: [&str; 5] = ["fig1", "fig2", "fig3", "fig4", "fig5"];

pub fn text(name: &str) -> Option<&'static str> {
    Some(match name {
        "fig1" => include_str!("../presets/fig1.toml"),
        "fig2" => include_str!("../presets/fig2.toml"),
        "fig3" => include_str!("../presets/fig3.toml"),
        "fig4" => include_str!("../presets/fig4.toml"),
        "fig5" => include_str!("../presets/fig5.toml"),
        _ => return None,
    })
}

pub fn load(name: &str) -> Result<Config, CliError> {
    let text = text(name).ok_or_else(|| {
        CliError::Config(format!(
            "unknown preset `{name}` (expected one of {})",
            NAMES.join(", ")
        ))
    })?;
    Config::parse(text)
}
