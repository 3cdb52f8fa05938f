//! Sequential conditional VAE over contact, part and direction maps.

mod loss;
mod model;
mod train;

pub use loss::{cvae_loss, kl_divergence, reconstruction_loss, DecoderOutputs, LossConfig, LossReport, ReconTerms, DIRECTION_EPS};
pub use model::{
    reparameterize, sample_contactgen, standard_normal_latent, Conditioning, CvaeArch, CvaeModel, Decoded, Factor,
    LatentGaussian, PointFeatures, Target, LATENT_DIM,
};
pub use train::{augment, checkpoint_epoch, random_rotation, train, train_model, EpochStats, TrainConfig, TrainReport, METRICS_HEADER};
