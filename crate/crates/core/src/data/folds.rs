use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Development,
    Evaluation,
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dev" | "development" => Ok(Stage::Development),
            "eval" | "evaluation" => Ok(Stage::Evaluation),
            other => Err(format!("unknown stage `{other}` (expected dev or eval)")),
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Development => "dev",
            Stage::Evaluation => "eval",
        })
    }
}

/// Folder ids used for training, validation and testing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldPlan {
    pub stage: Stage,
    pub train: Vec<u32>,
    pub validation: Vec<u32>,
    pub test: Vec<u32>,
}

impl FoldPlan {
    pub fn new(stage: Stage) -> Self {
        match stage {
            Stage::Development => Self {
                stage,
                train: vec![3, 4, 5, 6],
                validation: vec![2],
                test: vec![1],
            },
            Stage::Evaluation => Self {
                stage,
                train: vec![2, 3, 4, 5, 6],
                validation: vec![1],
                test: vec![7, 8],
            },
        }
    }

    pub fn all(&self) -> Vec<u32> {
        let mut v: Vec<u32> = self
            .train
            .iter()
            .chain(&self.validation)
            .chain(&self.test)
            .copied()
            .collect();
        v.sort_unstable();
        v
    }
}
