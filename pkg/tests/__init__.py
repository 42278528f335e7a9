"""Tests for ctxcat"""
