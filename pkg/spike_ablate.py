"""Dev spike: full vs -L per-scale comparison under the criterion-6 recipe (temporary)."""
import numpy as np, time
from anysr.faces import face_corpus, face_image
from anysr.imageops import resample_bicubic
from anysr.metrics import psnr_y
from anysr.model import AblationVariant, ModelConfig
from anysr.trainer import TrainConfig, train
from anysr.evaluate import super_resolve

desk_model = ModelConfig(feat_channels=32, res_blocks=4)
cfg = TrainConfig(lr_size=32, scale_min=1.0, scale_max=2.0, batch_size=2, epochs=40,
                  learning_rate=1e-3, decay_epoch=30, decay_factor=0.1, delta=1e-3,
                  queries_per_image=64, seed=7, model=desk_model)
corpus = face_corpus(100, size=144, seed=1)
held = [face_image(10_000_000 + i) for i in range(20)]

def per_image_psnr(model, variant, scale):
    size = round(scale * 32)
    vals = []
    for gt in held:
        hr = resample_bicubic(gt, size, size)
        lr = resample_bicubic(hr, 32, 32)
        sr = super_resolve(model, lr, scale, variant=variant)
        vals.append(psnr_y(sr, hr))
    return np.array(vals)

results = {}
for label in ("full", "-L"):
    variant = AblationVariant.from_label(label)
    t0 = time.perf_counter()
    model, _, log = train(cfg, corpus, variant=variant)
    print(f"{label}: trained in {time.perf_counter()-t0:.0f}s, final loss {log[-1].loss:.5f}", flush=True)
    for scale in (2.0, 3.0, 4.0):
        results[(label, scale)] = per_image_psnr(model, variant, scale)
        print(f"  x{scale:g}: mean {results[(label, scale)].mean():.4f} dB", flush=True)

for scale in (2.0, 3.0, 4.0):
    diff = results[("full", scale)] - results[("-L", scale)]
    wins = int((diff > 0).sum())
    print(f"x{scale:g}: full - (-L) mean {diff.mean():+.4f} dB, full wins {wins}/20, "
          f"min {diff.min():+.3f}, max {diff.max():+.3f}", flush=True)
