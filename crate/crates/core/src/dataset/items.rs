use super::StimulusSet;
use crate::feature_io::{Order, Trial};

/// Expands a stimulus set into its four ABX items.
///
/// The order token names the presentation of the two category labels and
/// the category of the probe. Labels are assigned per item so the probe's
/// category carries the token's final letter, which makes the target the
/// reference matching the probe in every item and leaves the presentation
/// position to [`Order::correct_position`].
pub fn make_items(set: &StimulusSet) -> [Trial; 4] {
    let (target, other) = if set.x_matches_a() {
        (&set.a, &set.b)
    } else {
        (&set.b, &set.a)
    };
    let set_id = set.id();
    Order::ALL.map(|order| Trial {
        trial_id: format!("{set_id}+{order}"),
        target_id: target.id.clone(),
        other_id: other.id.clone(),
        probe_id: set.x.id.clone(),
        order,
        contrast: set.contrast.clone(),
        context: set.context.clone(),
        language: set.language,
        ref_speaker: set.a.speaker_id.clone(),
        probe_speaker: set.x.speaker_id.clone(),
    })
}
