use std::sync::mpsc::{Receiver, RecvTimeoutError, Sender};
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::select::Question;
use super::session::{Answer, ElicitationSession};
use super::ElicitError;
use crate::cost::{cost, CostMatrix, FeatureVector};

/// How long a live subject may take before the session pauses.
pub const DEFAULT_ANSWER_TIMEOUT: Duration = Duration::from_secs(600);

/// Something that answers questions. `Ok(None)` pauses the session.
pub trait Responder {
    fn respond(&mut self, session: &ElicitationSession, question: &Question) -> Result<Option<Answer>, ElicitError>;
}

/// Answer of a subject whose costs follow `truth`.
///
/// Two options: the cheaper one is preferred when it undercuts the other by
/// more than `indiff_band`, else indifference. More options: the cheapest,
/// lowest pool index on ties. With probability `flip_prob` a preference is
/// replaced by a uniformly random other option.
pub fn respond_simulated<R: Rng>(
    truth: &CostMatrix,
    question: &Question,
    x0: &FeatureVector,
    pool: &[FeatureVector],
    indiff_band: f64,
    flip_prob: f64,
    rng: &mut R,
) -> Result<Answer, ElicitError> {
    let options = &question.option_indices;
    if options.len() < 2 {
        return Err(ElicitError::InvalidArgument("questions need at least two options".into()));
    }
    let costs = options
        .iter()
        .map(|&i| cost(truth, &pool[i], x0))
        .collect::<Result<Vec<_>, _>>()?;
    let chosen = if options.len() == 2 {
        if costs[0] < costs[1] - indiff_band {
            0
        } else if costs[1] < costs[0] - indiff_band {
            1
        } else {
            return Ok(Answer::Indifferent);
        }
    } else {
        (0..options.len())
            .min_by(|&a, &b| costs[a].total_cmp(&costs[b]).then(options[a].cmp(&options[b])))
            .expect("nonempty")
    };
    let chosen = if flip_prob > 0.0 && rng.random::<f64>() < flip_prob {
        let other = rng.random_range(0..options.len() - 1);
        if other >= chosen {
            other + 1
        } else {
            other
        }
    } else {
        chosen
    };
    Ok(Answer::Preferred(options[chosen]))
}

/// Simulated subject for benchmarks and tests.
#[derive(Debug, Clone)]
pub struct SimulatedResponder {
    pub truth: CostMatrix,
    pub indiff_band: f64,
    pub flip_prob: f64,
    rng: ChaCha8Rng,
}

impl SimulatedResponder {
    pub fn new(truth: CostMatrix, indiff_band: f64, flip_prob: f64, seed: u64) -> Self {
        Self {
            truth,
            indiff_band,
            flip_prob,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Responder for SimulatedResponder {
    fn respond(&mut self, session: &ElicitationSession, question: &Question) -> Result<Option<Answer>, ElicitError> {
        respond_simulated(
            &self.truth,
            question,
            session.x0(),
            session.pool(),
            self.indiff_band,
            self.flip_prob,
            &mut self.rng,
        )
        .map(Some)
    }
}

/// Hands each question to another thread and waits for its answer.
pub struct ChannelResponder {
    questions: Sender<Question>,
    answers: Receiver<Answer>,
    timeout: Duration,
}

impl ChannelResponder {
    pub fn new(questions: Sender<Question>, answers: Receiver<Answer>) -> Self {
        Self {
            questions,
            answers,
            timeout: DEFAULT_ANSWER_TIMEOUT,
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }
}

impl Responder for ChannelResponder {
    fn respond(&mut self, _: &ElicitationSession, question: &Question) -> Result<Option<Answer>, ElicitError> {
        self.questions
            .send(question.clone())
            .map_err(|_| ElicitError::Disconnected)?;
        match self.answers.recv_timeout(self.timeout) {
            Ok(a) => Ok(Some(a)),
            Err(RecvTimeoutError::Timeout) => Ok(None),
            Err(RecvTimeoutError::Disconnected) => Err(ElicitError::Disconnected),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (FeatureVector, Vec<FeatureVector>) {
        let x0 = FeatureVector::from_slice(&[0.0, 0.0]).unwrap();
        let pool = [[0.5_f64.sqrt(), 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 0.5_f64.sqrt()]]
            .iter()
            .map(|p| FeatureVector::from_slice(p).unwrap())
            .collect();
        (x0, pool)
    }

    fn q(options: &[usize]) -> Question {
        Question {
            option_indices: options.to_vec(),
            projection_distance: 0.0,
        }
    }

    #[test]
    fn strict_preference_and_tie() {
        let (x0, pool) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = CostMatrix::identity(2);
        let ans = respond_simulated(&a, &q(&[0, 1]), &x0, &pool, 0.0, 0.0, &mut rng).unwrap();
        assert_eq!(ans, Answer::Preferred(0));
        let ans = respond_simulated(&a, &q(&[1, 2]), &x0, &pool, 0.0, 0.0, &mut rng).unwrap();
        assert_eq!(ans, Answer::Indifferent);
        // costs 0.5 vs 1.0 fall inside a band of 0.6
        let ans = respond_simulated(&a, &q(&[0, 1]), &x0, &pool, 0.6, 0.0, &mut rng).unwrap();
        assert_eq!(ans, Answer::Indifferent);
    }

    #[test]
    fn certain_flip_always_flips_pairs() {
        let (x0, pool) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let ans = respond_simulated(&CostMatrix::identity(2), &q(&[1, 0]), &x0, &pool, 0.0, 1.0, &mut rng).unwrap();
            assert_eq!(ans, Answer::Preferred(1));
        }
    }

    #[test]
    fn k_options_pick_cheapest_lowest_index() {
        let (x0, pool) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ans = respond_simulated(&CostMatrix::identity(2), &q(&[2, 3, 0]), &x0, &pool, 0.0, 0.0, &mut rng).unwrap();
        assert_eq!(ans, Answer::Preferred(0));
    }
}
