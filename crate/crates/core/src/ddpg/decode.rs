use crate::env::{ActionSpace, AgentAction};
use crate::error::{Error, Result};

/// Maps raw actor scores to an executable action.
///
/// Bus scores are ordered `(-1, 0, +1)`; on ties the halt wins, then the
/// lower index. Bike scores are `n` station scores followed by a quantity
/// in `[-1, 1]` that scales the vehicle capacity; ties pick the lowest
/// station. The world clips the quantity to what is feasible.
pub fn decode_action(scores: &[f64], space: ActionSpace) -> Result<AgentAction> {
    if scores.len() != space.score_len() {
        return Err(Error::shape("action scores", space.score_len(), scores.len()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("action scores".into()));
    }
    match space {
        ActionSpace::Bus => {
            let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let pick = if scores[1] == best { 1 } else { scores.iter().position(|&s| s == best).expect("max exists") };
            Ok(AgentAction::Bus(pick as i32 - 1))
        }
        ActionSpace::Bike { stations, capacity } => {
            let mut best = 0;
            for (i, &s) in scores[..stations].iter().enumerate() {
                if s > scores[best] {
                    best = i;
                }
            }
            let q = scores[stations].clamp(-1.0, 1.0);
            Ok(AgentAction::Bike {
                station: best,
                quantity: (q * capacity as f64).round() as i32,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Controlled, SimEnv};
    use crate::rng::Rng64;
    use crate::scenario::ScenarioFile;

    #[test]
    fn examples() {
        assert_eq!(decode_action(&[0.1, 0.9, 0.3], ActionSpace::Bus).unwrap(), AgentAction::Bus(0));
        assert_eq!(decode_action(&[0.9, 0.1, 0.3], ActionSpace::Bus).unwrap(), AgentAction::Bus(-1));
        assert_eq!(decode_action(&[0.5, 0.5, 0.5], ActionSpace::Bus).unwrap(), AgentAction::Bus(0));
        assert_eq!(decode_action(&[0.5, 0.1, 0.5], ActionSpace::Bus).unwrap(), AgentAction::Bus(-1));
        let bike = ActionSpace::Bike { stations: 3, capacity: 10 };
        assert_eq!(
            decode_action(&[0.1, 0.9, 0.3, 0.73], bike).unwrap(),
            AgentAction::Bike { station: 1, quantity: 7 }
        );
        assert_eq!(
            decode_action(&[0.4, 0.4, 0.4, -1.0], bike).unwrap(),
            AgentAction::Bike { station: 0, quantity: -10 }
        );
        assert!(decode_action(&[0.1, 0.2], ActionSpace::Bus).is_err());
        assert!(decode_action(&[f64::NAN, 0.0, 0.0], ActionSpace::Bus).is_err());
    }

    #[test]
    fn decoded_actions_are_always_accepted() {
        let mut rng = Rng64::new(8);
        for (name, controlled) in [("tidal5", Controlled::Bike), ("busline", Controlled::Bus), ("outage", Controlled::Bike)] {
            let mut env = SimEnv::new(&ScenarioFile::bundled(name).unwrap().unwrap(), controlled).unwrap();
            for episode in 0..20 {
                env.reset(episode).unwrap();
                while !env.is_done() {
                    let space = env.action_space();
                    let actions: Vec<AgentAction> = env
                        .learners()
                        .iter()
                        .map(|_| {
                            let scores: Vec<f64> = (0..space.score_len()).map(|_| rng.uniform(-3.0, 3.0)).collect();
                            decode_action(&scores, space).unwrap()
                        })
                        .collect();
                    env.step(&actions).unwrap();
                }
            }
        }
    }
}
