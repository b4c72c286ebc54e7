"""Build a tiny word-level causal LM offline, for tests and fixtures.

A WordLevel tokenizer is trained on the given texts (plus punctuation split
off by the whitespace pre-tokenizer) and paired with a small
randomly-initialized GPT-2-architecture model. Weights are seeded, so a
fixture generated from one build replays deterministically against that
same build.
"""

from __future__ import annotations

import os
from typing import Iterable


def build_tiny_model(
    texts: Iterable[str],
    out_dir: str | os.PathLike,
    seed: int = 0,
    n_embd: int = 32,
    n_layer: int = 2,
    n_head: int = 2,
    n_positions: int = 128,
    identity: str = "tiny-wordlm-v1",
) -> str:
    """Write model + tokenizer to out_dir and return the path."""
    import torch
    from tokenizers import Tokenizer
    from tokenizers.models import WordLevel
    from tokenizers.pre_tokenizers import Whitespace
    from transformers import GPT2Config, GPT2LMHeadModel, PreTrainedTokenizerFast

    pre = Whitespace()
    vocab: dict[str, int] = {"<unk>": 0, "<pad>": 1}
    for text in texts:
        for word, _span in pre.pre_tokenize_str(text):
            if word not in vocab:
                vocab[word] = len(vocab)

    tok = Tokenizer(WordLevel(vocab, unk_token="<unk>"))
    tok.pre_tokenizer = pre
    tokenizer = PreTrainedTokenizerFast(
        tokenizer_object=tok, unk_token="<unk>", pad_token="<pad>"
    )

    torch.manual_seed(seed)
    config = GPT2Config(
        vocab_size=len(vocab),
        n_positions=n_positions,
        n_embd=n_embd,
        n_layer=n_layer,
        n_head=n_head,
        bos_token_id=0,
        eos_token_id=0,
    )
    config.model_identity = identity  # stable id for score caches
    model = GPT2LMHeadModel(config)

    out_dir = str(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    model.save_pretrained(out_dir)
    tokenizer.save_pretrained(out_dir)
    return out_dir
