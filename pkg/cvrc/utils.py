import hashlib
import logging
import timeit

import torch

shandle = logging.StreamHandler()
shandle.setFormatter(
    logging.Formatter(
        '[%(levelname)s:%(process)d %(module)s:%(lineno)d %(asctime)s] '
        '%(message)s'))
log = logging.getLogger('cvrc')
log.propagate = False
log.addHandler(shandle)
log.setLevel(logging.INFO)

timer = timeit.default_timer


def split_seed(seed, name):
    """
    Derive an independent 63-bit seed for one consumer of randomness
    (a network, a frame sampler, the noise field, ...) from the single
    top-level seed of a run.
    """
    digest = hashlib.blake2b('{}:{}'.format(int(seed), name).encode('utf8'),
                             digest_size=8).digest()
    return int.from_bytes(digest, 'little') & 0x7FFFFFFFFFFFFFFF


def make_generator(seed):
    gen = torch.Generator(device='cpu')
    gen.manual_seed(int(seed))
    return gen
