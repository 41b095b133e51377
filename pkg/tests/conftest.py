import sys
from datetime import date
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from starpredict.model import SemesterCalendar


@pytest.fixture(scope="session")
def calendar() -> SemesterCalendar:
    """13-week UTC semester starting on a Monday."""
    return SemesterCalendar.from_weeks(date(2024, 9, 2), 13)


@pytest.fixture(scope="session")
def short_calendar() -> SemesterCalendar:
    return SemesterCalendar.from_weeks(date(2024, 9, 2), 4)


@pytest.fixture(scope="session")
def small_bundle(short_calendar):
    """60-student cohort over 4 weeks; cheap enough for harness tests."""
    import dataclasses

    from starpredict import synthgen

    cfg = dataclasses.replace(synthgen.SynthConfig(), n_students=60,
                              star_fraction=0.1, rng_seed=5)
    return synthgen.generate(cfg, short_calendar)


@pytest.fixture(scope="session")
def quick_settings():
    """Evaluation settings scaled down for unit-test speed."""
    from starpredict import cograph, embed, featurize, regularity
    from starpredict.augment import AugmentConfig
    from starpredict.classify import GbdtConfig
    from starpredict.evaluate import EvalSettings

    features = featurize.FeatureConfig(
        regularity=regularity.RegularityConfig(),
        cooc=cograph.CoocConfig(),
        walks=embed.WalkConfig(walks_per_node=2, walk_length=20),
        skipgram=embed.SkipGramConfig(dim=8, epochs=1),
    )
    return EvalSettings(
        features=features,
        augment=AugmentConfig(k_neighbors=3),
        gbdt=GbdtConfig(n_estimators=8, max_depth=3),
    )
