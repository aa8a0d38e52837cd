# -*- coding: utf-8 -*-
"""
models 패키지 - 확률 모델
==========================
운동 모델, 클래스 조건부 측정 모델(CCMM), MAE 기반 판정 모델과 그 학습 절차,
신뢰도 전이/갱신 모델을 포함합니다.
"""
