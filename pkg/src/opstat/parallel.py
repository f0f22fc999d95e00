from concurrent.futures import ThreadPoolExecutor


def pmap(fn, items, threads=1):
    """Order-preserving map, threaded when ``threads > 1``."""
    items = list(items)
    if threads is None or threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
