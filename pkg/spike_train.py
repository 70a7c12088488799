"""Dev spike: desk-scale training efficacy for the x2 PSNR gap (temporary)."""
import numpy as np, time
from anysr.autodiff import no_grad
from anysr.faces import face_corpus, face_image
from anysr.imageops import Image, resample_bicubic, make_coord_grid
from anysr.metrics import psnr_y
from anysr.model import ModelConfig, SuperResolver
from anysr.decoder import QueryBatch
from anysr.trainer import TrainConfig, train

desk_model = ModelConfig(feat_channels=32, res_blocks=4)
cfg = TrainConfig(lr_size=32, scale_min=1.0, scale_max=2.0, batch_size=2, epochs=40,
                  learning_rate=1e-3, decay_epoch=30, decay_factor=0.1, delta=1e-3,
                  queries_per_image=64, seed=7, model=desk_model)
corpus = face_corpus(100, size=144, seed=1)
held = [face_image(10_000_000 + i) for i in range(10)]

def infer_scale(model, lr_img, s):
    oh, ow = round(s * lr_img.height), round(s * lr_img.width)
    prep = model.prepare(lr_img)
    grid = make_coord_grid(oh, ow)
    with no_grad():
        out = model.query(prep, QueryBatch(grid.coords, [lr_img.height / oh, lr_img.width / ow])).data
    return Image(out.reshape(oh, ow, 3))

def report(model, tag):
    for s, hr_n in ((2.0, 64), (3.0, 96)):
        gaps = []
        for gt in held:
            hr = resample_bicubic(gt, hr_n, hr_n)
            lr = resample_bicubic(hr, 32, 32)
            m = psnr_y(infer_scale(model, lr, s), hr)
            b = psnr_y(resample_bicubic(lr, hr_n, hr_n), hr)
            gaps.append(m - b)
        print(f"[{tag}] x{s}: mean gap vs bicubic {np.mean(gaps):+.3f} dB", flush=True)

t0 = time.perf_counter()
state = {"it": 0}
def progress(row):
    state["it"] += 1
    if state["it"] % 250 == 0:
        print(f"iter {state['it']}: loss {row.loss:.5f}  ({time.perf_counter()-t0:.0f}s)", flush=True)

model, adam, log = train(cfg, corpus, progress=progress)
print(f"trained {len(log)} iterations in {time.perf_counter()-t0:.0f}s", flush=True)
report(model, "final")
