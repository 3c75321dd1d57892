#!/usr/bin/env python3
"""Walkthrough: guidance-driven candidate selection and reranking.

A strong bi-encoder's similarity matrix nominates a short list of gallery
candidates per query; an expensive matching head then scores only those
candidates, and the scores are folded back into a full matrix where
candidates always outrank the rest.
"""

import numpy as np

from rankfuse import (
    EmbeddingMatrix,
    GroundTruth,
    ScoreMatrix,
    cosine_similarity,
    recall_at_k,
    rerank_selected,
    select_topk_features,
    topk_rows,
)
from rankfuse.synth import SynthConfig, gen_paired_embeddings

cfg = SynthConfig(n_items=40, dim=10, noise_sigma=0.8, seed=3, n_models=0, model_skill=())
text, image, gt = gen_paired_embeddings(cfg)

# The guidance model: plain cosine scores. Decent but imperfect at R@1.
guidance = cosine_similarity(text, image)
print("guidance R@1:", recall_at_k(guidance, gt, 1))
print("guidance R@5:", recall_at_k(guidance, gt, 5))

# Keep only the top-5 image features per query for expensive rescoring.
k = 5
selected = select_topk_features(image, guidance, k=k)
print(f"selected {selected.k} of {guidance.n_gallery} gallery items per query")
print("query 0 candidates:", selected.indices[0].tolist())

# Stand-in for a matching head: noisy access to the truth, but only on the
# k shortlisted candidates (k scores per query instead of the whole gallery).
rng = np.random.default_rng(9)
is_match = (selected.indices == np.arange(selected.n_queries)[:, None]).astype(float)
match_scores = is_match + rng.normal(0.0, 0.15, is_match.shape)

reranked = rerank_selected(selected, match_scores)
print("reranked R@1:", recall_at_k(reranked, gt, 1))

# The shortlist is a hard gate: whatever the head says, non-candidates stay
# below every candidate, so R@k for k <= shortlist size only depends on the
# head's ordering of the shortlist.
top_after = topk_rows(reranked, k).indices
agree = all(set(top_after[q]) == set(selected.indices[q]) for q in range(selected.n_queries))
print("top-k after reranking is exactly the shortlist:", agree)

# Degenerate case: shortlist the whole gallery and feed the guidance scores
# back in; the ranking is unchanged.
full = select_topk_features(image, guidance, k=guidance.n_gallery)
same = rerank_selected(full, full.guidance_scores)
print(
    "full-shortlist identity preserves the ranking:",
    np.array_equal(
        topk_rows(same, guidance.n_gallery).indices,
        topk_rows(guidance, guidance.n_gallery).indices,
    ),
)
