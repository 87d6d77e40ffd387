#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Tests for the Hermitian linear-algebra helpers
"""

import os
import sys

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

# Add src directory to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), 'src'))

from semidoa.exceptions import DomainError, PositiveDefinitenessError  # noqa: E402
from semidoa.hermitian import (apply_perp_projector, hermitian_eig, hermitian_sqrt_inv,  # noqa: E402
                               is_hermitian, is_positive_definite, kron, perp_projector,
                               selection_matrix, unvecd, vec, vecd)


def _random_hpd(n, rng):
    x = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return x @ x.conj().T + n * np.eye(n)


def test_vec_is_column_major():
    a = np.array([[1, 2], [3, 4]])
    assert_array_equal(vec(a), [1, 3, 2, 4])


def test_vecd_drops_top_left_entry():
    a = np.array([[1, 2], [3, 4]])
    assert_array_equal(vecd(a), [3, 2, 4])
    assert_array_equal(vecd(np.array([[5]])), np.array([]))


def test_unvecd_restores_matrix():
    rng = np.random.default_rng(3)
    a = _random_hpd(4, rng)
    rebuilt = unvecd(vecd(a), a[0, 0])
    assert_array_equal(rebuilt, a)


def test_unvecd_rejects_bad_length():
    with pytest.raises(DomainError):
        unvecd(np.zeros(5))


@pytest.mark.parametrize("n", range(2, 9))
def test_selection_matrix_matches_vecd(n):
    rng = np.random.default_rng(4 + n)
    a = _random_hpd(n, rng)
    p = selection_matrix(n)
    assert p.shape == (n * n - 1, n * n)
    assert_allclose(p @ vec(a), vecd(a), atol=0)


def test_perp_projector_properties():
    n = 8
    pi = perp_projector(n)
    assert_allclose(pi @ pi, pi, atol=1e-12)
    assert_allclose(pi, pi.T, atol=0)
    assert np.trace(pi) == pytest.approx(63.0)
    assert_allclose(pi @ vec(np.eye(n)), np.zeros(n * n), atol=1e-12)


def test_apply_perp_projector_matches_dense():
    rng = np.random.default_rng(5)
    n = 4
    x = rng.standard_normal(n * n) + 1j * rng.standard_normal(n * n)
    assert_allclose(apply_perp_projector(x, n), perp_projector(n) @ x, atol=1e-12)


def test_hermitian_eig_reconstructs():
    rng = np.random.default_rng(6)
    a = _random_hpd(5, rng)
    eigenvalues, eigenvectors = hermitian_eig(a)
    assert np.all(np.diff(eigenvalues) >= 0)
    assert_allclose(eigenvectors.conj().T @ eigenvectors, np.eye(5), atol=1e-12)
    assert_allclose((eigenvectors * eigenvalues) @ eigenvectors.conj().T, a, atol=1e-10)


def test_hermitian_eig_rejects_non_hermitian():
    with pytest.raises(DomainError):
        hermitian_eig(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_sqrt_and_inverse_sqrt():
    rng = np.random.default_rng(7)
    a = _random_hpd(6, rng)
    root, inv_root = hermitian_sqrt_inv(a)
    assert is_hermitian(root) and is_hermitian(inv_root)
    assert_allclose(root @ root, a, atol=1e-9)
    assert_allclose(inv_root @ a @ inv_root, np.eye(6), atol=1e-10)
    # transpose of a Hermitian factor is its conjugate
    assert_allclose(inv_root.T, inv_root.conj(), atol=1e-14)


def test_sqrt_rejects_indefinite():
    with pytest.raises(PositiveDefinitenessError):
        hermitian_sqrt_inv(np.diag([1.0, -1.0]))
    assert not is_positive_definite(np.diag([1.0, 0.0]))
    assert is_positive_definite(np.eye(3))


def test_kron_vec_identity():
    rng = np.random.default_rng(8)
    a = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    b = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    x = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    assert_allclose(kron(a, b) @ vec(x), vec(b @ x @ a.T), atol=1e-12)
