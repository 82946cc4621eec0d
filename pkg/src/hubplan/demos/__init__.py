from .expert import (
    ExpertError,
    FailureSpec,
    Rollout,
    bfs_path,
    enumerate_failure_specs,
    generate_failure_demo,
    generate_success_demo,
    goto_and_face,
)
from .dataset import (
    DemoDataset,
    N_FAILURES,
    build_dataset,
    failure_candidates,
    load_dataset,
    save_dataset,
    seen_unseen_split,
)
