import numpy as np, time, json
from rpd.losses import LossConfig
from rpd.trainer import ExperimentConfig, TeacherSettings, train

out = {}
t0 = time.time()

def run(tag, variant, seeds):
    quarters, curves, tb = [], [], None
    for s in seeds:
        teacher = TeacherSettings(kind="scripted", competence=0.6,
                                  action_noise_std=0.05, seed=1)
        cfg = ExperimentConfig(task="Push2D", reward_mode="sparse", hidden_sizes=(64, 64),
                               loss=LossConfig(variant=variant),
                               teacher=teacher if variant != "none" else None,
                               total_steps=1_000_000, minibatch_size=200, epochs=8,
                               eval_interval=5, eval_episodes=100, seed=s)
        res = train(cfg)
        evals = [(m.global_step, m.eval_success) for m in res.metrics]
        succ = [e for _, e in evals]
        quarters.append(round(float(np.mean(succ[-(len(succ) // 4):])), 3))
        curves.append(evals[::25])
        tb = res.teacher_success
    out[tag] = {"quarters": quarters, "teacher": tb, "curves": curves}
    print(f"{tag:26s} lastQ={quarters} teacher={tb} [{time.time()-t0:.0f}s]", flush=True)

run("sparse_ppo", "none", [0, 1, 2])
run("sparse_rpd_mse", "rpd_mse", [0, 1, 2])
json.dump(out, open("/root/pkg/scratch_g3.json", "w"))
