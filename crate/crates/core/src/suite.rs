//! Game specs that ship with the crate.

use crate::game::{load_game_spec, GameError, GameSpec};

/// `(id, source)` for every bundled game, in suite order.
pub const BUNDLED: [(&str, &str); 6] = [
    ("toyzork", include_str!("../games/toyzork.game")),
    ("lockbox", include_str!("../games/lockbox.game")),
    ("cellar", include_str!("../games/cellar.game")),
    ("vault", include_str!("../games/vault.game")),
    ("garden", include_str!("../games/garden.game")),
    ("workshop", include_str!("../games/workshop.game")),
];

pub fn bundled_source(id: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(name, _)| *name == id).map(|(_, src)| *src)
}

pub fn load_bundled(id: &str) -> Result<GameSpec, GameError> {
    let src = bundled_source(id).ok_or_else(|| GameError::Invalid(format!("no bundled game `{id}`")))?;
    load_game_spec(src)
}

/// Every bundled game, parsed, paired with its id.
pub fn load_suite() -> Result<Vec<(String, GameSpec)>, GameError> {
    BUNDLED
        .iter()
        .map(|(id, src)| Ok((id.to_string(), load_game_spec(src)?)))
        .collect()
}
