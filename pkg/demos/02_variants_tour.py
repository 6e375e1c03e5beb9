"""Tour the three training variants on one dataset.

* ssdc: alternating k-means pseudo-labels and cross-entropy epochs.
* dcec: autoencoder pretraining, then joint reconstruction + sharpened
  soft-assignment KL training.
* aeml: the same autoencoder, but the cluster term pulls embeddings
  toward their current centroid instead of sharpening probabilities.

Run from the repository root:

    python3 demos/02_variants_tour.py
"""

import numpy as np

import specsense as ss

profile = ss.default_profile(3, seed=21)
dataset = ss.normalize_dataset(ss.synth_generate(profile, 150))
config = ss.TrainConfig(epochs=6, batch_size=128, k=10, seed=3)


def score(name, labels):
    hom = ss.homogeneity(dataset.labels, labels)
    nmi = ss.nmi(dataset.labels, labels)
    print(f"{name:>5}: homogeneity={hom:.3f} nmi={nmi:.3f}")


# --- ssdc --------------------------------------------------------------------
ssdc = ss.train_ssdc(dataset, config)
score("ssdc", ssdc.final_labels)

# --- shared autoencoder pretraining -----------------------------------------
# Both autoencoder variants start from the same reconstruction-only model.
ae = ss.build_ae(seed=3, k=10)
ae, curve = ss.pretrain_ae(ae, dataset, 12, config)
print(f"pretrain mse: {curve[0]:.4f} -> {curve[-1]:.4f} over {len(curve)} epochs")

# --- dcec --------------------------------------------------------------------
dcec = ss.joint_train(ae, dataset, "dcec", 6, config, pretrain_curve=curve)
for e in dcec.epochs:
    print(f"  dcec epoch {e.epoch}: recon={e.recon_loss:.4f} kl={e.cluster_loss:.5f}")
score("dcec", dcec.final_labels)

# --- aeml --------------------------------------------------------------------
# Reuse the identical pretrained weights so the comparison is honest.
ae2 = ss.build_ae(seed=3, k=10)
ae2, _ = ss.pretrain_ae(ae2, dataset, 12, config)
aeml = ss.joint_train(ae2, dataset, "aeml", 6, config)
print(f"  aeml surrogate cluster loss: {aeml.epochs[0].cluster_loss:.4f} -> {aeml.epochs[-1].cluster_loss:.4f}")
score("aeml", aeml.final_labels)
