use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// Driving-encounter category. The discriminant order is the tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Category {
    /// Category A: the two vehicles meet at an intersection.
    Intersection,
    /// Category B: the two vehicles travel in opposite directions on one road.
    OppositeDirection,
    /// Category C: one vehicle passes another that is stationary or slow.
    Bypass,
    /// Category D: both vehicles travel the same road in the same direction.
    SameRoad,
    /// Two paths converging at a shallow angle.
    Merge,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::Intersection,
        Category::OppositeDirection,
        Category::Bypass,
        Category::SameRoad,
        Category::Merge,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Machine name used in CSV files.
    pub fn name(self) -> &'static str {
        match self {
            Category::Intersection => "intersection",
            Category::OppositeDirection => "opposite_direction",
            Category::Bypass => "bypass",
            Category::SameRoad => "same_road",
            Category::Merge => "merge",
        }
    }

    /// Row title for the comparison table.
    pub fn title(self) -> &'static str {
        match self {
            Category::Intersection => "Category A",
            Category::OppositeDirection => "Category B",
            Category::Bypass => "Category C",
            Category::SameRoad => "Category D",
            Category::Merge => "Merge",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        Category::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .or(match s {
                "A" => Some(Category::Intersection),
                "B" => Some(Category::OppositeDirection),
                "C" => Some(Category::Bypass),
                "D" => Some(Category::SameRoad),
                _ => None,
            })
            .ok_or_else(|| Error::validation("category", format!("unknown category {s:?}")))
    }
}
