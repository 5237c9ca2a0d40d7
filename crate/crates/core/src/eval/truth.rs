use std::fmt::Debug;

use serde::{Deserialize, Serialize};

/// Truth domain the lasso fixpoint engine is generic over.
pub trait Truth: Copy + Eq + Debug {
    const TRUE: Self;
    const FALSE: Self;

    fn and(self, other: Self) -> Self;
    fn or(self, other: Self) -> Self;
    fn not(self) -> Self;

    fn implies(self, other: Self) -> Self {
        self.not().or(other)
    }

    fn iff(self, other: Self) -> Self {
        self.implies(other).and(other.implies(self))
    }
}

impl Truth for bool {
    const TRUE: Self = true;
    const FALSE: Self = false;

    fn and(self, other: Self) -> Self {
        self && other
    }

    fn or(self, other: Self) -> Self {
        self || other
    }

    fn not(self) -> Self {
        !self
    }
}

/// Strong Kleene three-valued logic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Kleene {
    False,
    Unknown,
    True,
}

impl Kleene {
    pub fn is_known(self) -> bool {
        self != Kleene::Unknown
    }

    pub fn to_bool(self) -> Option<bool> {
        match self {
            Kleene::True => Some(true),
            Kleene::False => Some(false),
            Kleene::Unknown => None,
        }
    }
}

impl From<bool> for Kleene {
    fn from(b: bool) -> Self {
        if b {
            Kleene::True
        } else {
            Kleene::False
        }
    }
}

impl Truth for Kleene {
    const TRUE: Self = Kleene::True;
    const FALSE: Self = Kleene::False;

    // Variants are declared in truth order, so min/max are meet/join.
    fn and(self, other: Self) -> Self {
        self.min(other)
    }

    fn or(self, other: Self) -> Self {
        self.max(other)
    }

    fn not(self) -> Self {
        match self {
            Kleene::True => Kleene::False,
            Kleene::False => Kleene::True,
            Kleene::Unknown => Kleene::Unknown,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Kleene::*;

    const ALL: [Kleene; 3] = [False, Unknown, True];

    #[test]
    fn agrees_with_bool_on_known_values() {
        for a in [false, true] {
            for b in [false, true] {
                let (ka, kb) = (Kleene::from(a), Kleene::from(b));
                assert_eq!(ka.and(kb), Kleene::from(a && b));
                assert_eq!(ka.or(kb), Kleene::from(a || b));
                assert_eq!(ka.implies(kb), Kleene::from(!a || b));
                assert_eq!(ka.iff(kb), Kleene::from(a == b));
            }
        }
    }

    #[test]
    fn unknown_absorption() {
        assert_eq!(Unknown.and(False), False);
        assert_eq!(Unknown.or(True), True);
        assert_eq!(Unknown.and(True), Unknown);
        assert_eq!(Unknown.iff(True), Unknown);
        assert_eq!(Unknown.or(Unknown.not()), Unknown);
    }

    #[test]
    fn connectives_are_knowledge_monotone() {
        // Refining an Unknown argument never flips a known result.
        let refines = |a: Kleene, b: Kleene| a == Unknown || a == b;
        for a in ALL {
            for a2 in ALL.into_iter().filter(|&x| refines(a, x)) {
                for b in ALL {
                    for b2 in ALL.into_iter().filter(|&x| refines(b, x)) {
                        assert!(refines(a.and(b), a2.and(b2)));
                        assert!(refines(a.or(b), a2.or(b2)));
                        assert!(refines(a.iff(b), a2.iff(b2)));
                    }
                }
            }
        }
    }
}
