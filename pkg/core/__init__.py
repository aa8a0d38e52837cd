# -*- coding: utf-8 -*-
"""
core 패키지 - 핵심 기반 모듈
==============================
2D 포즈 기하 연산과 점유 격자 지도(Occupancy Grid) / 거리장(Distance Field) 등
시스템 전체가 공유하는 기반 자료구조를 포함합니다.
"""
