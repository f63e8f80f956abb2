//! Planted-group synthetic datasets.
//!
//! Items carry latent vectors; each planted group has a preference vector and
//! users score items by `(group preference + noise_level * own offset) . latent`.
//! A user's history is filled from the top of that ranking, except that each
//! slot is replaced by a uniform draw with probability `noise_level`. Every
//! modality is a random linear image of the latents plus Gaussian noise of
//! standard deviation `noise_level`, so features carry group-relevant signal.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::dataio::{InteractionStore, ModalityFeatures};
use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub num_users: usize,
    pub num_items: usize,
    pub num_modalities: usize,
    pub feature_dim: usize,
    pub true_groups: usize,
    pub interactions_per_user: usize,
    pub noise_level: f64,
    pub latent_dim: usize,
    /// Scale of each user's taste offset from their group preference.
    pub user_spread: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            num_users: 200,
            num_items: 500,
            num_modalities: 2,
            feature_dim: 16,
            true_groups: 4,
            interactions_per_user: 20,
            noise_level: 0.3,
            latent_dim: 8,
            user_spread: 0.3,
            seed: 1,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("num_users", self.num_users),
            ("num_items", self.num_items),
            ("num_modalities", self.num_modalities),
            ("feature_dim", self.feature_dim),
            ("true_groups", self.true_groups),
            ("latent_dim", self.latent_dim),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::invalid(format!("{name} must be >= 1")));
        }
        if self.true_groups > self.num_users {
            return Err(Error::invalid("true_groups exceeds num_users"));
        }
        if self.interactions_per_user < 2 {
            return Err(Error::invalid("interactions_per_user must be >= 2"));
        }
        if self.interactions_per_user > self.num_items {
            return Err(Error::invalid(format!(
                "interactions_per_user {} exceeds num_items {}",
                self.interactions_per_user, self.num_items
            )));
        }
        if !(self.user_spread.is_finite() && self.user_spread >= 0.0) {
            return Err(Error::invalid("user_spread must be finite and >= 0"));
        }
        if !(0.0..=1.0).contains(&self.noise_level) {
            return Err(Error::invalid("noise_level must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub store: InteractionStore,
    pub features: ModalityFeatures,
    pub true_groups: Vec<usize>,
    /// `M x latent_dim` item latents.
    pub item_latents: Matrix,
}

fn gaussian_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, std: f64) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| std * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Matrix::from_vec(rows, cols, data).expect("shape")
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = rng_from_seed(spec.seed);
    let r = spec.latent_dim;
    let m_items = spec.num_items;

    let latents = gaussian_matrix(&mut rng, m_items, r, 1.0);
    let prefs = gaussian_matrix(&mut rng, spec.true_groups, r, 1.0);

    let mut groups: Vec<usize> = (0..spec.num_users).map(|u| u % spec.true_groups).collect();
    groups.shuffle(&mut rng);

    let mut lists = Vec::with_capacity(spec.num_users);
    for &group in &groups {
        let offset: Vec<f64> = (0..r)
            .map(|_| spec.user_spread * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let taste: Vec<f64> = prefs.row(group).iter().zip(&offset).map(|(a, b)| a + b).collect();
        let scores = latents.mat_vec(&taste);
        let mut ranked: Vec<usize> = (0..m_items).collect();
        ranked.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));

        let mut taken = vec![false; m_items];
        let mut cursor = 0;
        let mut chosen = Vec::with_capacity(spec.interactions_per_user);
        while chosen.len() < spec.interactions_per_user {
            let item = if rng.random::<f64>() < spec.noise_level {
                let free: Vec<usize> = (0..m_items).filter(|&i| !taken[i]).collect();
                free[rng.random_range(0..free.len())]
            } else {
                while taken[ranked[cursor]] {
                    cursor += 1;
                }
                ranked[cursor]
            };
            taken[item] = true;
            chosen.push(item);
        }
        let mut stamps: Vec<i64> = (1..=chosen.len() as i64).collect();
        stamps.shuffle(&mut rng);
        lists.push(chosen.into_iter().zip(stamps).collect());
    }

    let modalities = (0..spec.num_modalities)
        .map(|_| {
            let map = gaussian_matrix(&mut rng, r, spec.feature_dim, 1.0 / (r as f64).sqrt());
            let mut feats = latents.matmul(&map);
            let noise = gaussian_matrix(&mut rng, m_items, spec.feature_dim, spec.noise_level);
            feats.axpy(1.0, &noise);
            feats
        })
        .collect();

    Ok(SyntheticData {
        store: InteractionStore::new(m_items, lists)?,
        features: ModalityFeatures::new(modalities)?,
        true_groups: groups,
        item_latents: latents,
    })
}
