use crate::error::{Error, Result};

/// `exp` of the mean per-token negative log-likelihood.
pub fn perplexity(nll_per_token: &[f64]) -> Result<f64> {
    if nll_per_token.is_empty() {
        return Err(Error::arg("perplexity of an empty token stream"));
    }
    if let Some(bad) = nll_per_token.iter().find(|v| !v.is_finite()) {
        return Err(Error::arg(format!("non-finite negative log-likelihood {bad}")));
    }
    let mean = nll_per_token.iter().sum::<f64>() / nll_per_token.len() as f64;
    Ok(mean.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fixed_values() {
        assert_eq!(perplexity(&[0.0; 4]).unwrap(), 1.0);
        // e^3.3855 = 29.5328...
        assert!((perplexity(&[3.3855; 7]).unwrap() - 29.53).abs() < 0.01);
        assert!((perplexity(&[1.0, 3.0]).unwrap() - 7.389_056_098_930_65).abs() < 1e-12);
        assert!(perplexity(&[]).is_err());
        assert!(perplexity(&[f64::NAN]).is_err());
    }

    proptest! {
        #[test]
        fn monotone_in_mean(a in -5.0f64..5.0, d in 1e-6f64..5.0) {
            prop_assert!(perplexity(&[a]).unwrap() < perplexity(&[a + d]).unwrap());
        }
    }
}
