"""Inspect the two architectures: layer table, parameter counts, forward
GFLOPs, and a finite-difference audit of the backward pass.

Run from the repository root:

    python3 demos/03_model_accounting.py
"""

import specsense as ss

classifier = ss.build_ssdc(k=10, seed=0)
autoencoder = ss.build_ae(seed=0, k=10)

for name, model in (("classifier", classifier), ("autoencoder", autoencoder)):
    print(f"{name}:")
    shape = (1, 1024)
    for layer in model.layers:
        spec = layer.spec()
        kind = spec.pop("kind")
        params = sum(arr.size for arr in layer.params().values())
        shape = layer.out_shape(shape) if hasattr(layer, "out_shape") else shape
        desc = ", ".join(f"{k}={v}" for k, v in spec.items())
        print(f"  {kind:<18} {desc:<48} params={params:<7} out={shape}")
    params, gflops = ss.complexity_report(model)
    print(f"  total: {params:,} parameters, {gflops:.6f} GFLOPs per forward sweep\n")

_, ssdc_gflops = ss.complexity_report(classifier)
_, ae_gflops = ss.complexity_report(autoencoder)
print(f"autoencoder/classifier forward cost ratio: {ae_gflops / ssdc_gflops:.4f}")
print("(the decoder roughly doubles the work of the shared encoder)\n")

# Finite differences in float64 against the analytic backward pass.  The
# checks probe a seeded subset of coordinates, so they finish in seconds.
ce_err = ss.grad_check_model(classifier, (2, 1, 1024), loss="ce")
mse_err = ss.grad_check_model(autoencoder, (2, 1, 1024), loss="mse")
print(f"gradient audit, worst relative error: classifier {ce_err:.2e}, autoencoder {mse_err:.2e}")
