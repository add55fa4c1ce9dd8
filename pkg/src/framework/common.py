from collections.abc import Callable, Sequence

from toolz import reduce


def split_evenly(total: int, parts: int) -> tuple[int, ...]:
    assert total >= 0 and parts >= 1

    base, remainder = divmod(total, parts)

    # the last chunk absorbs the remainder
    return tuple(base + (remainder if i == parts - 1 else 0) for i in range(parts))


def fold_ordered[T](merge: Callable[[T, T], T], partials: Sequence[T]) -> T:
    assert partials, "nothing to fold"

    return reduce(merge, partials[1:], partials[0])
