from .batching import Batch, batches
from .datasets import ClientShard, LabeledDataset, filter_labels
from .idx import IMAGE_MAGIC, LABEL_MAGIC, load_idx, write_idx
from .partition import PartitionPlan, partition
from .synthetic import blob_means, synth_generate, synth_holdout
