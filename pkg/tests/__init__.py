# -*- coding: utf-8 -*-
"""
tests 패키지 - 위치 추정 엔진 단위 테스트 모듈
"""
