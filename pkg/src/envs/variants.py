"""Initial piles of every Blocks World task variant."""
from src.envs.blocks import BlocksConfig
from src.symbolic.syntax import parse_piles
from src.utils.errors import ConfigError
from src.utils.models import Task, Variant


VARIANT_PILES: dict[Task, dict[Variant, str]] = {
    Task.UNSTACK: {
        Variant.TRAINING: '((a,b,c,d))',
        Variant.SWAP_TOP_2: '((a,b,d,c))',
        Variant.TWO_COLUMNS: '((a,b),(c,d))',
        Variant.BLOCKS_5: '((a,b,c,d,e))',
        Variant.BLOCKS_6: '((a,b,c,d,e,f))',
        Variant.BLOCKS_7: '((a,b,c,d,e,f,g))',
    },
    Task.STACK: {
        Variant.TRAINING: '((a),(b),(c),(d))',
        Variant.SWAP_RIGHT_2: '((a),(b),(d),(c))',
        Variant.TWO_COLUMNS: '((a,b),(c,d))',
        Variant.BLOCKS_5: '((a),(b),(c),(d),(e))',
        Variant.BLOCKS_6: '((a),(b),(c),(d),(e),(f))',
        Variant.BLOCKS_7: '((a),(b),(c),(d),(e),(f),(g))',
    },
    Task.ON: {
        Variant.TRAINING: '((a,b,c,d))',
        Variant.SWAP_TOP_2: '((a,b,d,c))',
        Variant.SWAP_MIDDLE_2: '((a,c,b,d))',
        Variant.BLOCKS_5: '((a,b,c,d,e))',
        Variant.BLOCKS_6: '((a,b,c,d,e,f))',
        Variant.BLOCKS_7: '((a,b,c,d,e,f,g))',
    },
}

ON_GOAL = ('a', 'b')


def task_variants(task: Task) -> list[Variant]:
    """Variants of `task` in reporting order: training, the two swaps/columns, then larger worlds."""
    return list(VARIANT_PILES[task])


def variant_config(task: Task, variant: Variant, **overrides) -> BlocksConfig:
    """Blocks World config for one named variant.

    Raises:
        ConfigError: If the task has no such variant.
    """
    try:
        piles = VARIANT_PILES[task][variant]
    except KeyError:
        raise ConfigError(f'task {task.value} has no variant {variant.value!r}') from None
    if task is Task.ON:
        overrides.setdefault('goal', ON_GOAL)
    return BlocksConfig(task=task, piles=parse_piles(piles), **overrides)
