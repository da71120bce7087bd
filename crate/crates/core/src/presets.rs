//! Shipped presets. Each is a config document; several extend another
//! through their `preset` key.

use crate::error::{Error, Result};

pub const NAMES: &[&str] = &[
    "fig2", "fig3", "fig4bd", "fig4ef", "fig5", "fig6a", "fig6b", "fig7a", "fig7b", "fig7c", "fig7d", "fig7e", "fig7f",
    "fig8",
];

pub fn get(name: &str) -> Result<&'static str> {
    Ok(match name {
        "fig2" => include_str!("../presets/fig2.json"),
        "fig3" => include_str!("../presets/fig3.json"),
        "fig4bd" => include_str!("../presets/fig4bd.json"),
        "fig4ef" => include_str!("../presets/fig4ef.json"),
        "fig5" => include_str!("../presets/fig5.json"),
        "fig6a" => include_str!("../presets/fig6a.json"),
        "fig6b" => include_str!("../presets/fig6b.json"),
        "fig7a" => include_str!("../presets/fig7a.json"),
        "fig7b" => include_str!("../presets/fig7b.json"),
        "fig7c" => include_str!("../presets/fig7c.json"),
        "fig7d" => include_str!("../presets/fig7d.json"),
        "fig7e" => include_str!("../presets/fig7e.json"),
        "fig7f" => include_str!("../presets/fig7f.json"),
        "fig8" => include_str!("../presets/fig8.json"),
        _ => return Err(Error::UnknownPreset(name.to_string())),
    })
}
