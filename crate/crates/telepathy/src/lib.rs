//! EEG-conditioned 3D object generation, end to end and self-contained.
//!
//! The pipeline has three stages:
//!
//! 1. **Representation learning** ([`encoder`], [`replearn`]): a dual
//!    self-attention EEG encoder with a record token is pretrained by masked
//!    autoencoding with dual-mask contrastive objectives, then refined with a
//!    bidirectional cross-attention reconstruction stage that ties EEG and
//!    image embeddings together.
//! 2. **Conditional diffusion prior** ([`diffusion`]): a small pixel-space
//!    U-Net is trained to predict noise conditioned on EEG embeddings via
//!    cross-attention, with classifier-free guidance and a LoRA adapter for
//!    the rendered-image score.
//! 3. **3D distillation** ([`nerf`], [`vsd`]): a compact neural radiance
//!    field is optimized with Variational Score Distillation against the
//!    prior, using view-conditioned embeddings and per-step adapter refits.
//!
//! Synthetic EEG-image corpora ([`dataio`]) stand in for recorded data so the
//! whole system runs on a desk CPU, and [`metrics`] provides the evaluation
//! protocol (PSNR plus Fréchet/perceptual proxies over the pipeline's own
//! image encoder). Everything is driven either through the `telepathy` CLI
//! ([`cli`]) or the runnable `examples/`.

pub mod autodiff;
pub mod cli;
pub mod dataio;
pub mod diffusion;
pub mod encoder;
pub mod metrics;
pub mod nerf;
pub mod nn;
pub mod replearn;
pub mod rng;
pub mod testutil;
pub mod vsd;
