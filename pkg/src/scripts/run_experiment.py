"""Run a blow-up experiment.

Usage:
    python src/scripts/run_experiment.py experiment=<name> <key>=<value> ...
"""

import logging

import hydra
from omegaconf import DictConfig

from blowup.harness import run_experiment

logger = logging.getLogger(__name__)


@hydra.main(config_path="../../config", config_name="config", version_base=None)
def main(cfg: DictConfig) -> None:
    """Run the experiment named in the configuration.

    Args:
        cfg (DictConfig):
            The Hydra configuration object.
    """
    manifest = run_experiment(cfg)
    logger.info(
        f"The {manifest['experiment']} experiment wrote {len(manifest['outputs'])} "
        "artifacts."
    )


if __name__ == "__main__":
    main()
