from .checkpoint import (CHECKPOINT_VERSION, MAGIC, CheckpointIntegrityError, CheckpointVersionError,
                         load_checkpoint, read_sidecar, save_checkpoint)
from .metrics import read_metrics, write_metrics
from .seeding import stream, stream_seed
