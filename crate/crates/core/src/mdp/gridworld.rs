use super::{Kernel, MdpError, TabularMdp};

/// Gridworld moves; the discriminant is the action index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridAction {
    Up = 0,
    Right = 1,
    Down = 2,
    Left = 3,
}

impl GridAction {
    pub const ALL: [GridAction; 4] = [Self::Up, Self::Right, Self::Down, Self::Left];

    fn offset(self) -> (isize, isize) {
        match self {
            Self::Up => (0, -1),
            Self::Right => (1, 0),
            Self::Down => (0, 1),
            Self::Left => (-1, 0),
        }
    }
}

/// `width × height` slippery gridworld.
///
/// States are `y * width + x`. The agent starts in the top-left cell; the goal is the
/// bottom-right cell and absorbing. Every step spent in the goal pays `goal_reward`;
/// all other rewards are `0`.
/// The intended move succeeds with probability `1 - slip_prob`; each of the other
/// three directions happens with `slip_prob / 3`. Moves into a wall leave the agent
/// in place.
pub fn make_gridworld(
    width: usize,
    height: usize,
    slip_prob: f64,
    goal_reward: f64,
    discount: f64,
) -> Result<TabularMdp, MdpError> {
    if width < 1 || height < 1 {
        return Err(MdpError::EmptyDimension("gridworld width/height"));
    }
    if !(0.0..1.0).contains(&slip_prob) {
        return Err(MdpError::Parameter(format!(
            "slip_prob must lie in [0, 1), got {slip_prob}"
        )));
    }
    if !goal_reward.is_finite() {
        return Err(MdpError::Parameter("goal_reward must be finite".into()));
    }
    let ns = width * height;
    let na = GridAction::ALL.len();
    let goal = ns - 1;
    let neighbor = |s: usize, dir: GridAction| -> usize {
        let (x, y) = ((s % width) as isize, (s / width) as isize);
        let (dx, dy) = dir.offset();
        let (nx, ny) = (x + dx, y + dy);
        if nx < 0 || ny < 0 || nx >= width as isize || ny >= height as isize {
            s
        } else {
            ny as usize * width + nx as usize
        }
    };
    let mut probs = vec![0.0; ns * na * ns];
    let mut reward = vec![0.0; ns * na];
    for s in 0..ns {
        for intended in GridAction::ALL {
            let row = &mut probs[(s * na + intended as usize) * ns..][..ns];
            if s == goal {
                row[goal] = 1.0;
                reward[s * na + intended as usize] = goal_reward;
                continue;
            }
            for dir in GridAction::ALL {
                let p = if dir == intended {
                    1.0 - slip_prob
                } else {
                    slip_prob / 3.0
                };
                row[neighbor(s, dir)] += p;
            }
        }
    }
    let mut init = vec![0.0; ns];
    init[0] = 1.0;
    let r_max = if goal_reward == 0.0 {
        1.0
    } else {
        goal_reward.abs()
    };
    TabularMdp::new(Kernel::new(ns, na, probs)?, reward, discount, init, r_max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_limit_is_one_hot() {
        let g = make_gridworld(4, 3, 0.0, 1.0, 0.9).unwrap();
        for s in 0..12 {
            for a in 0..4 {
                let row = g.kernel().row(s, a);
                assert_eq!(row.iter().filter(|p| **p == 1.0).count(), 1);
                assert_eq!(row.iter().filter(|p| **p == 0.0).count(), 11);
            }
        }
    }

    #[test]
    fn interior_slip_row() {
        let g = make_gridworld(5, 5, 0.3, 1.0, 0.9).unwrap();
        let s = 2 * 5 + 2;
        let row = g.kernel().row(s, GridAction::Up as usize);
        assert!((row[5 + 2] - 0.7).abs() < 1e-12);
        assert!((row[3 * 5 + 2] - 0.1).abs() < 1e-12);
        assert!((row[2 * 5 + 1] - 0.1).abs() < 1e-12);
        assert!((row[2 * 5 + 3] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn corner_reflects_and_goal_absorbs() {
        let g = make_gridworld(5, 5, 0.3, 2.0, 0.9).unwrap();
        // From the start corner, Up and Left both bounce back.
        let row = g.kernel().row(0, GridAction::Up as usize);
        assert!((row[0] - (0.7 + 0.1)).abs() < 1e-12);
        assert!((row[1] - 0.1).abs() < 1e-12);
        assert!((row[5] - 0.1).abs() < 1e-12);
        for a in 0..4 {
            assert_eq!(g.kernel().prob(24, a, 24), 1.0);
            assert_eq!(g.reward_at(24, a), 2.0);
            assert_eq!(g.reward_at(0, a), 0.0);
            assert_eq!(g.reward_at(23, a), 0.0);
        }
        assert_eq!(g.init_dist()[0], 1.0);
    }

    #[test]
    fn all_rows_sum_to_one() {
        let g = make_gridworld(5, 5, 0.3, 1.0, 0.9).unwrap();
        for s in 0..25 {
            for a in 0..4 {
                let sum: f64 = g.kernel().row(s, a).iter().sum();
                assert!((sum - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(make_gridworld(0, 3, 0.1, 1.0, 0.9).is_err());
        assert!(make_gridworld(3, 3, 1.0, 1.0, 0.9).is_err());
        assert!(make_gridworld(3, 3, -0.1, 1.0, 0.9).is_err());
    }
}
