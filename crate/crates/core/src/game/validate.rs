use super::spec::{Effect, GameSpec, Location, Pattern};
use super::GameError;

fn invalid(msg: impl Into<String>) -> GameError {
    GameError::Invalid(msg.into())
}

pub(crate) fn validate(spec: &GameSpec) -> Result<(), GameError> {
    if !(spec.max_score > 0.0) {
        return Err(invalid("max_score must be positive"));
    }
    for room in &spec.rooms {
        for e in &room.exits {
            if e.target >= spec.rooms.len() {
                return Err(invalid(format!("exit from `{}` targets a missing room", room.id)));
            }
        }
    }
    for o in &spec.objects {
        if !o.also_in.is_empty() && (o.takeable || !matches!(o.location, Location::Room(_))) {
            return Err(invalid(format!(
                "object `{}` is listed in several rooms, so it must be fixed and start in a room",
                o.id
            )));
        }
        if let Location::Inside(c) = o.location {
            if !spec.objects[c].container {
                return Err(invalid(format!("`{}` starts inside `{}`, which is not a container", o.id, spec.objects[c].id)));
            }
        }
        if o.initially_open && !o.openable {
            return Err(invalid(format!("`{}` starts open but is not openable", o.id)));
        }
        if o.initially_locked && o.locked_by.is_none() {
            return Err(invalid(format!("`{}` starts locked but has no `locked_by`", o.id)));
        }
        if o.initially_lit && !o.light {
            return Err(invalid(format!("`{}` starts lit but is not a light", o.id)));
        }
    }
    // Containment must be acyclic.
    for start in 0..spec.objects.len() {
        let mut cur = start;
        for _ in 0..=spec.objects.len() {
            match spec.objects[cur].location {
                Location::Inside(c) if c == start => {
                    return Err(invalid(format!("containment cycle through `{}`", spec.objects[start].id)))
                }
                Location::Inside(c) => cur = c,
                _ => break,
            }
        }
    }
    for rule in &spec.rules {
        for e in &rule.effects {
            let (o, ok, what) = match *e {
                Effect::Open(o) | Effect::Close(o) => (o, spec.open_flag[o].is_some(), "openable"),
                Effect::Lock(o) | Effect::Unlock(o) => (o, spec.locked_flag[o].is_some(), "lockable"),
                Effect::Light(o) | Effect::Extinguish(o) => (o, spec.lit_flag[o].is_some(), "a light"),
                Effect::Put(_, c) => (c, spec.objects[c].container, "a container"),
                _ => continue,
            };
            if !ok {
                return Err(invalid(format!("rule effect needs `{}` to be {what}", spec.objects[o].id)));
            }
        }
    }
    for v in &spec.verbs {
        for t in &v.templates {
            for p in &t.parts {
                if let Pattern::Word(w) = p {
                    if !spec.vocabulary.contains(w) {
                        return Err(invalid(format!("vocabulary is missing verb word `{w}`")));
                    }
                }
            }
        }
    }
    for o in &spec.objects {
        for tok in o.names.iter().flatten() {
            if !spec.vocabulary.contains(tok) {
                return Err(invalid(format!("vocabulary is missing object word `{tok}`")));
            }
        }
    }
    if spec.walkthrough.is_empty() {
        return Err(invalid("walkthrough is empty"));
    }
    let (mut state, _) = spec.reset();
    let mut total = 0.0;
    for action in &spec.walkthrough {
        let (next, result) = spec.step(&state, action);
        total += result.reward;
        state = next;
    }
    if (total - spec.max_score).abs() > 1e-9 {
        return Err(invalid(format!(
            "walkthrough replay scores {total}, but max_score is {}",
            spec.max_score
        )));
    }
    Ok(())
}
