//! Swiss-system pairwise tournaments.
//!
//! Every round, participants are ranked by `(wins desc, id asc)` and paired
//! with their nearest-ranked opponent they have not met yet. The search
//! backtracks, so a rematch only happens when no rematch-free pairing of the
//! whole round exists. With an odd count, the lowest-ranked participant that
//! has not had a bye sits out; a bye is neither a win nor a loss, and
//! scores are wins over matches actually played.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{AnnotationError, Vote};

/// Default number of rounds per tournament.
pub const DEFAULT_ROUNDS: usize = 6;

/// Node budget of the rematch-avoiding search before falling back to plain
/// adjacent pairing. Groups of the intended size never come close.
const SEARCH_BUDGET: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Match {
    /// Higher-ranked side at pairing time.
    pub left: String,
    pub right: String,
    pub winner: Option<String>,
}

impl Match {
    pub fn is_between(&self, a: &str, b: &str) -> bool {
        (self.left == a && self.right == b) || (self.left == b && self.right == a)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Round {
    /// 1-based.
    pub number: usize,
    pub matches: Vec<Match>,
    pub bye: Option<String>,
}

impl Round {
    pub fn is_complete(&self) -> bool {
        self.matches.iter().all(|m| m.winner.is_some())
    }

    pub fn pending(&self) -> impl Iterator<Item = &Match> {
        self.matches.iter().filter(|m| m.winner.is_none())
    }
}

/// What a recorded vote changed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordOutcome {
    pub round_closed: bool,
    pub complete: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tournament {
    participants: Vec<String>,
    rounds_total: usize,
    /// Closed rounds followed by the open one, if any.
    rounds: Vec<Round>,
    wins: Vec<usize>,
    byes: Vec<bool>,
}

impl Tournament {
    /// Starts a tournament and pairs round 1.
    pub fn new(participants: Vec<String>, rounds_total: usize) -> Result<Self, AnnotationError> {
        if participants.len() < 2 {
            return Err(AnnotationError::TooFewParticipants(participants.len()));
        }
        if rounds_total == 0 {
            return Err(AnnotationError::NoRounds);
        }
        let mut seen = BTreeSet::new();
        if let Some(dup) = participants.iter().find(|p| !seen.insert(p.as_str())) {
            return Err(AnnotationError::DuplicateParticipant(dup.clone()));
        }
        let n = participants.len();
        let mut t = Self {
            participants,
            rounds_total,
            rounds: Vec::new(),
            wins: alloc::vec![0; n],
            byes: alloc::vec![false; n],
        };
        t.open_round();
        Ok(t)
    }

    pub fn participants(&self) -> &[String] {
        &self.participants
    }

    pub fn rounds_total(&self) -> usize {
        self.rounds_total
    }

    pub fn rounds(&self) -> &[Round] {
        &self.rounds
    }

    pub fn rounds_completed(&self) -> usize {
        self.rounds.iter().filter(|r| r.is_complete()).count()
    }

    pub fn is_complete(&self) -> bool {
        self.rounds_completed() == self.rounds_total
    }

    /// The open round, if the tournament is not complete.
    pub fn current_round(&self) -> Option<&Round> {
        self.rounds.last().filter(|r| !r.is_complete())
    }

    pub fn wins(&self, id: &str) -> Option<usize> {
        self.index(id).map(|i| self.wins[i])
    }

    /// `(id, wins)` in participant order.
    pub fn standings(&self) -> impl Iterator<Item = (&str, usize)> {
        self.participants.iter().map(String::as_str).zip(self.wins.iter().copied())
    }

    /// Unresolved pairings of the current round.
    pub fn next_pairings(&self) -> Result<Vec<Match>, AnnotationError> {
        self.current_round()
            .map(|r| r.pending().cloned().collect())
            .ok_or(AnnotationError::TournamentComplete)
    }

    /// Applies `vote`; on a closed round the next one is paired immediately.
    /// The state is unchanged on error.
    pub fn record_result(&mut self, vote: &Vote) -> Result<RecordOutcome, AnnotationError> {
        let total = self.rounds_total;
        let round = self
            .rounds
            .last_mut()
            .filter(|r| !r.is_complete())
            .ok_or(AnnotationError::TournamentComplete)?;
        if vote.winner != vote.left && vote.winner != vote.right {
            return Err(AnnotationError::WinnerNotInPair(vote.winner.clone()));
        }
        let m = round
            .matches
            .iter_mut()
            .find(|m| m.is_between(&vote.left, &vote.right))
            .filter(|_| vote.round == round.number)
            .ok_or_else(|| AnnotationError::NotPending {
                left: vote.left.clone(),
                right: vote.right.clone(),
            })?;
        if m.winner.is_some() {
            return Err(AnnotationError::DuplicateVote {
                left: vote.left.clone(),
                right: vote.right.clone(),
            });
        }
        m.winner = Some(vote.winner.clone());
        let closed = round.is_complete();
        let number = round.number;
        let i = self.index(&vote.winner).expect("winner is a participant");
        self.wins[i] += 1;
        if closed && number < total {
            self.open_round();
        }
        Ok(RecordOutcome {
            round_closed: closed,
            complete: closed && number == total,
        })
    }

    /// Matches `id` has played so far (byes excluded).
    pub fn matches_played(&self, id: &str) -> Option<usize> {
        self.index(id)?;
        Some(
            self.rounds
                .iter()
                .flat_map(|r| &r.matches)
                .filter(|m| m.left == id || m.right == id)
                .count(),
        )
    }

    /// Normalized score per participant, in participant order: wins over
    /// matches played. A bye is neither a win nor a loss, so it leaves the
    /// denominator too; without byes this is `wins / rounds_total`. A
    /// participant that never played scores 0.5.
    pub fn final_scores(&self) -> Result<Vec<(String, f64)>, AnnotationError> {
        if !self.is_complete() {
            return Err(AnnotationError::Incomplete {
                completed: self.rounds_completed(),
                total: self.rounds_total,
            });
        }
        Ok(self
            .participants
            .iter()
            .zip(&self.wins)
            .map(|(p, &w)| {
                let played = self.matches_played(p).expect("participant");
                let score = if played == 0 { 0.5 } else { w as f64 / played as f64 };
                (p.clone(), score)
            })
            .collect())
    }

    fn index(&self, id: &str) -> Option<usize> {
        self.participants.iter().position(|p| p == id)
    }

    fn met(&self) -> BTreeSet<(usize, usize)> {
        let mut met = BTreeSet::new();
        for m in self.rounds.iter().flat_map(|r| &r.matches) {
            let (a, b) = (self.index(&m.left).expect("known"), self.index(&m.right).expect("known"));
            met.insert((a.min(b), a.max(b)));
        }
        met
    }

    fn open_round(&mut self) {
        let mut order: Vec<usize> = (0..self.participants.len()).collect();
        order.sort_by(|&a, &b| {
            self.wins[b]
                .cmp(&self.wins[a])
                .then_with(|| self.participants[a].cmp(&self.participants[b]))
        });
        let bye = (order.len() % 2 == 1).then(|| {
            let pos = order.iter().rposition(|&i| !self.byes[i]).unwrap_or(order.len() - 1);
            order.remove(pos)
        });
        if let Some(b) = bye {
            self.byes[b] = true;
        }
        let met = self.met();
        let pairs = pair_without_rematch(&order, &met).unwrap_or_else(|| order.chunks(2).map(|c| (c[0], c[1])).collect());
        self.rounds.push(Round {
            number: self.rounds.len() + 1,
            matches: pairs
                .into_iter()
                .map(|(a, b)| Match {
                    left: self.participants[a].clone(),
                    right: self.participants[b].clone(),
                    winner: None,
                })
                .collect(),
            bye: bye.map(|b| self.participants[b].clone()),
        });
    }
}

/// Pairs `order` (even length, best first) so that no pair has met before,
/// preferring the nearest-ranked partner at every step.
fn pair_without_rematch(order: &[usize], met: &BTreeSet<(usize, usize)>) -> Option<Vec<(usize, usize)>> {
    fn search(
        rest: &mut Vec<usize>,
        met: &BTreeSet<(usize, usize)>,
        out: &mut Vec<(usize, usize)>,
        budget: &mut usize,
    ) -> bool {
        if rest.is_empty() {
            return true;
        }
        let a = rest.remove(0);
        for k in 0..rest.len() {
            if *budget == 0 {
                break;
            }
            *budget -= 1;
            let b = rest[k];
            if met.contains(&(a.min(b), a.max(b))) {
                continue;
            }
            rest.remove(k);
            out.push((a, b));
            if search(rest, met, out, budget) {
                return true;
            }
            out.pop();
            rest.insert(k, b);
        }
        rest.insert(0, a);
        false
    }
    let mut rest = order.to_vec();
    let mut out = Vec::with_capacity(order.len() / 2);
    let mut budget = SEARCH_BUDGET;
    search(&mut rest, met, &mut out, &mut budget).then_some(out)
}
