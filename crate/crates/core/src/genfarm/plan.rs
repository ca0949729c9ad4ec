use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::promptforge::PromptSpec;
use crate::seed;

/// Ordered generation tasks plus the per-class counts they realize.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationPlan {
    pub tasks: Vec<(String, PromptSpec)>,
    pub target_counts: BTreeMap<String, usize>,
}

impl GenerationPlan {
    pub fn validate(&self) -> Result<()> {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        let mut seeds = HashSet::new();
        for (class, spec) in &self.tasks {
            if spec.class_name != *class {
                return Err(Error::State(format!(
                    "task for `{class}` carries a prompt for `{}`",
                    spec.class_name
                )));
            }
            if !seeds.insert(spec.seed) {
                return Err(Error::State(format!("seed {} used twice", spec.seed)));
            }
            *counts.entry(class).or_default() += 1;
        }
        for (class, &n) in &self.target_counts {
            let got = counts.remove(class.as_str()).unwrap_or(0);
            if got != n {
                return Err(Error::State(format!("`{class}`: {got} tasks for a target of {n}")));
            }
        }
        if let Some(extra) = counts.keys().next() {
            return Err(Error::State(format!("tasks for untargeted class `{extra}`")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }
}

/// Cycle through each class's bank prompts until its count is met, giving
/// every task a fresh generation seed. Classes are planned in name order.
pub fn plan_generation(
    counts: &BTreeMap<String, usize>,
    prompt_bank: &[PromptSpec],
    seed: u64,
) -> Result<GenerationPlan> {
    let mut tasks = Vec::with_capacity(counts.values().sum());
    let mut used = HashSet::new();
    for (class, &n) in counts {
        if n == 0 {
            continue;
        }
        let prompts: Vec<&PromptSpec> = prompt_bank.iter().filter(|p| p.class_name == *class).collect();
        if prompts.is_empty() {
            return Err(Error::arg(format!("no bank prompts for class `{class}`")));
        }
        for j in 0..n {
            let tag = j.to_string();
            let mut s = seed::derive_seed(seed, &["plan", class, &tag]) & u64::from(u32::MAX);
            while !used.insert(s) {
                s = (s + 1) & u64::from(u32::MAX);
            }
            let spec = PromptSpec {
                seed: s,
                ..prompts[j % prompts.len()].clone()
            };
            tasks.push((class.clone(), spec));
        }
    }
    let plan = GenerationPlan {
        tasks,
        target_counts: counts.iter().filter(|(_, &n)| n > 0).map(|(c, &n)| (c.clone(), n)).collect(),
    };
    plan.validate()?;
    Ok(plan)
}
