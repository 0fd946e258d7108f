//! Character-level edit distance over Unicode scalar values.

use serde::{Deserialize, Serialize};

/// Edit operation costs. Insertions and deletions cost 1.
///
/// The default substitution cost is 2, so a substitution is never cheaper
/// than a deletion plus an insertion (indel distance). This reproduces the
/// published reordering figures: `Baiden Dzho` → 10 and `Dzho Baiden` → 6
/// against `Joe Biden`. A cost of 1 gives classic Levenshtein.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditCosts {
    pub substitution: u32,
}

impl Default for EditCosts {
    fn default() -> Self {
        EditCosts { substitution: 2 }
    }
}

impl EditCosts {
    pub fn levenshtein() -> Self {
        EditCosts { substitution: 1 }
    }

    pub fn indel() -> Self {
        EditCosts { substitution: 2 }
    }

    /// Costs of 1 or 2 keep the distance a metric.
    pub fn is_valid(self) -> bool {
        (1..=2).contains(&self.substitution)
    }
}

/// Edit distance with the default costs.
pub fn edit_distance(a: &str, b: &str) -> u32 {
    edit_distance_with(a, b, EditCosts::default())
}

pub fn levenshtein(a: &str, b: &str) -> u32 {
    edit_distance_with(a, b, EditCosts::levenshtein())
}

pub fn edit_distance_with(a: &str, b: &str, costs: EditCosts) -> u32 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    edit_distance_chars(&a, &b, costs)
}

/// Two-row dynamic program.
pub fn edit_distance_chars(a: &[char], b: &[char], costs: EditCosts) -> u32 {
    if a.is_empty() {
        return b.len() as u32;
    }
    if b.is_empty() {
        return a.len() as u32;
    }
    let mut prev: Vec<u32> = (0..=b.len() as u32).collect();
    let mut curr = vec![0u32; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        curr[0] = i as u32 + 1;
        for (j, &cb) in b.iter().enumerate() {
            let sub = prev[j] + if ca == cb { 0 } else { costs.substitution };
            curr[j + 1] = sub.min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn worked_example() {
        assert_eq!(edit_distance("Baiden Dzho", "Joe Biden"), 10);
        assert_eq!(edit_distance("Dzho Baiden", "Joe Biden"), 6);
        assert_eq!(levenshtein("Dzho Baiden", "Joe Biden"), 5);
    }

    #[test]
    fn basics() {
        assert_eq!(edit_distance("x", "x"), 0);
        assert_eq!(edit_distance("", "abc"), 3);
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert_eq!(edit_distance("kitten", "sitting"), 5);
        assert_eq!(levenshtein("Джо", "Джон"), 1);
    }

    proptest! {
        #[test]
        fn metric_axioms(a in "[abc ]{0,8}", b in "[abc ]{0,8}", c in "[abc ]{0,8}", sub in 1u32..=2) {
            let costs = EditCosts { substitution: sub };
            let d = |x: &str, y: &str| edit_distance_with(x, y, costs);
            prop_assert_eq!(d(&a, &b), d(&b, &a));
            prop_assert_eq!(d(&a, &b) == 0, a == b);
            prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c));
        }
    }
}
