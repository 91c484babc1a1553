use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shs::RateSymbol;

/// The four event rates of the forwarder.
///
/// `lambda_hat` is the location-update arrival rate, `lambda` the app-update
/// arrival rate, `mu_hat` the write speed and `mu` the read speed. Zero rates
/// are representable so that the solvers can report them as non-ergodic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateParams {
    pub lambda_hat: f64,
    pub lambda: f64,
    pub mu_hat: f64,
    pub mu: f64,
}

impl RateParams {
    pub fn new(lambda_hat: f64, lambda: f64, mu_hat: f64, mu: f64) -> Result<Self> {
        for (name, value) in [
            ("lambda_hat", lambda_hat),
            ("lambda", lambda),
            ("mu_hat", mu_hat),
            ("mu", mu),
        ] {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidRate { name, value });
            }
        }
        Ok(Self {
            lambda_hat,
            lambda,
            mu_hat,
            mu,
        })
    }

    /// Rates from the normalized triple with unit write speed, so ages come
    /// out in units of the mean write time.
    pub fn normalized(rho_hat: f64, beta: f64, sigma: f64) -> Result<Self> {
        Self::with_write_speed(rho_hat, beta, sigma, 1.0)
    }

    pub fn with_write_speed(rho_hat: f64, beta: f64, sigma: f64, mu_hat: f64) -> Result<Self> {
        for (name, value) in [
            ("rho_hat", rho_hat),
            ("beta", beta),
            ("sigma", sigma),
            ("mu_hat", mu_hat),
        ] {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidRate { name, value });
            }
        }
        Self::new(rho_hat * mu_hat, beta * mu_hat, mu_hat, sigma * mu_hat)
    }

    pub fn rho_hat(&self) -> f64 {
        self.lambda_hat / self.mu_hat
    }

    pub fn beta(&self) -> f64 {
        self.lambda / self.mu_hat
    }

    pub fn sigma(&self) -> f64 {
        self.mu / self.mu_hat
    }

    pub fn lambda_star(&self) -> f64 {
        self.lambda + self.lambda_hat
    }

    pub fn mu_star(&self) -> f64 {
        self.mu + self.mu_hat
    }

    pub fn rate(&self, symbol: RateSymbol) -> f64 {
        match symbol {
            RateSymbol::LambdaHat => self.lambda_hat,
            RateSymbol::Lambda => self.lambda,
            RateSymbol::MuHat => self.mu_hat,
            RateSymbol::Mu => self.mu,
        }
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(
            self.lambda_hat * c,
            self.lambda * c,
            self.mu_hat * c,
            self.mu * c,
        )
    }

    pub(crate) fn require_positive(&self) -> Result<()> {
        for symbol in RateSymbol::ALL {
            if self.rate(symbol) <= 0.0 {
                return Err(Error::NonErgodic(format!(
                    "rate {symbol} is zero; every rate must be positive"
                )));
            }
        }
        Ok(())
    }
}
