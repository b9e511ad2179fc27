//! Built-in configuration for each scenario, the files under `configs/`.

use crate::config::ScenarioKind;

pub fn default_config(kind: ScenarioKind) -> &'static str {
    match kind {
        ScenarioKind::Bands => include_str!("../configs/bands.conf"),
        ScenarioKind::Expand => include_str!("../configs/expand.conf"),
        ScenarioKind::Gpe => include_str!("../configs/gpe.conf"),
        ScenarioKind::Fig1 => include_str!("../configs/fig1.conf"),
        ScenarioKind::Fig2 => include_str!("../configs/fig2.conf"),
        ScenarioKind::Fig3a => include_str!("../configs/fig3a.conf"),
        ScenarioKind::Fig3b => include_str!("../configs/fig3b.conf"),
        ScenarioKind::Regimes => include_str!("../configs/regimes.conf"),
    }
}
